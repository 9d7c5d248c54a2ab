"""approxrate: constructive sparse-network approximants and wedgelet coding.

Modules
-------
nnet          sparse feed-forward networks and combinators
splines       cardinal B-splines (closed form + quadrature oracle)
constructors  explicit networks with certificates
quantizer     weight discretization and bit accounting
cartoon       star-shaped functions and the petal hypercube
wedgelet      edgelet dictionary, quadtree fitting, bit-exact codec
ratelab       error measurement, rate fitting, Hamming covering oracle
cli           the ``approxrate`` command line front end
"""

__version__ = "0.1.0"
