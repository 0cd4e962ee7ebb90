"""Test package for Smart Image Organizer."""
