"""Binary classifiers and an evaluation harness for the WDBC breast-cancer data.

Kernel SVM (SMO dual solver), variational Bayesian logistic regression,
Newton-Raphson logistic regression and Euclidean KNN, plus ROC/AUC tools.
"""
__version__ = "0.1.0"
