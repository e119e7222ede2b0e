"""Operator CLI, scripted scenarios, and the web-console gateway."""
