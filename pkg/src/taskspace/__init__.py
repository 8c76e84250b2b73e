"""Task mining toolkit: carve a question-tag-answer corpus into tasks and
measure how those tasks relate, what they pay, and how people and languages
move between them."""

__version__ = "0.1.0"
