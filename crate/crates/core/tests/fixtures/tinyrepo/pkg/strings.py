def normalize(text):
    """Lower-case and strip surrounding whitespace."""
    return text.strip().lower()


def tokenize(text):
    return normalize(text).split()
