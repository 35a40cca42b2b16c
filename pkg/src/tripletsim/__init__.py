"""Rate, SNR and CAR modelling for pulsed cascaded down-conversion triplet sources."""
__version__ = "0.1.0"
