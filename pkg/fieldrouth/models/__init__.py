"""Model files shipped with fieldrouth."""
