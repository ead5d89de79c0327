"""
LongiForest Tests

Test suite for the mixed-model, survival, tree, forest, importance and CLI layers.
"""
