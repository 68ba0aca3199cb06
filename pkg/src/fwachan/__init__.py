"""Suburban fixed-wireless-access channel toolkit.

Processes rotating-horn angular scan records into path gain, effective
azimuth gain, Rician temporal-fading, and Doppler statistics; fits and
evaluates slope-intercept propagation models; and runs a Monte Carlo
coverage simulator producing 90%-coverage Shannon rate versus distance.
"""

__version__ = "0.1.0"
