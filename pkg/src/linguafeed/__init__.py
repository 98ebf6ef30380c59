"""Ingests foreign-language articles and video captions, annotates them with
topics and an estimated difficulty level, and recommends items matching a
learner's interests and evolving proficiency."""

__version__ = "0.1.0"
