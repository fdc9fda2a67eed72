"""Random fields, compact sets, capacities and the eps-kernels."""
