"""babblenhmm test suite."""
