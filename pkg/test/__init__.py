"""Tests to validate the behavior of hyperspot."""
