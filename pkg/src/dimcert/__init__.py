"""Certified Hausdorff dimension bounds for Markov and countable iterated function schemes."""
