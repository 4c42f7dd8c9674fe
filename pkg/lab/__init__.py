"""Command-line front end of the lab."""
