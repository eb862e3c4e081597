class Stats:
    """Running statistics over a list of numbers."""

    def mean(self, values):
        if not values:
            return 0.0
        return sum(values) / len(values)
