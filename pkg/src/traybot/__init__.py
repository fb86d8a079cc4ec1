"""Safety-critical autonomy stack for quadruped tray inspection."""

__version__ = "0.1.0"
