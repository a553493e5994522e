"""
lcpnp: linear-covariance loss for weighted Perspective-n-Points
"""
