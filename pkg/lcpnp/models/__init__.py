"""
lcpnp configuration models
"""
