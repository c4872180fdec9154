"""Helpers shared by the rfrsabr package and the command line."""
