# Random instance families (explicit, degenerate, robust).
