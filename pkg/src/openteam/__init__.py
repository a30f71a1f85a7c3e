"""Open-team grid worlds with scripted teammates and a coordination-graph
value learner trained by Q-learning or soft policy iteration."""

__version__ = "0.1.0"
