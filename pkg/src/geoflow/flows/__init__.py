"""Time-dependent solvers: Hodge heat flow, Einstein scaling flow, warped coflow."""
