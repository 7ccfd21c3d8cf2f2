# Sampling Discretization Package
