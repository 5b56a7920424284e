"""Tests for the lowres_pose toolkit."""
