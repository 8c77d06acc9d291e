from rcdopt.subsolvers.conformal import ElementaryDecomposition, conformal_realization
from rcdopt.subsolvers.directions import two_block_direction, tuple_direction, knapsack_direction, \
    coordinate_step, pair_curvature
from rcdopt.subsolvers.knapsack import quadratic_knapsack, split_l1_knapsack, simplex_projection
from rcdopt.subsolvers.pw1d import PiecewiseQuadratic1D, Term, pw1d_minimize
