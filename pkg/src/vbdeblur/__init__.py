"""Blind deconvolution by coupled-penalty coordinate descent.

Subpackages:

* grids        -- valid-convolution operators, masks, pyramids
* priors       -- hyperprior energies f, induced penalties g_x, gamma/omega rules
* penalty_lab  -- direct evaluation and analysis of the coupled penalty
* solver       -- the coordinate-descent core (VB and MAP modes)
* pipeline     -- end-to-end deblurring, synthetic data, evaluation metrics
* cli          -- command-line drivers
"""

__version__ = "0.1.0"
