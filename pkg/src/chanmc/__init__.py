"""Monte Carlo simulation of MeV proton channeling and superfocusing in <100> Si."""
__version__ = "0.1.0"
