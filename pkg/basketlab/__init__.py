"""
BasketLab: market-basket mining with forecast-bounded association rules.

This package turns receipt data into binarized baskets, reduces them around
analyst-chosen target products, mines association rules with Apriori, and
uses M5P model trees and k-means clustering to judge how long those rules
stay trustworthy.
"""

__version__ = "0.1.0"
