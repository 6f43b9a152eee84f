"""DFA Backlog Lab - exact, asymptotic and simulated analysis of Dynamic Frame Aloha estimators."""

__version__ = "1.0.0"
