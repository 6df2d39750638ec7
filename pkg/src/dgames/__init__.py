"""Drifting-game view of online learning: Hedge, bandits, OCO and boosting."""

__version__ = "0.1.0"
