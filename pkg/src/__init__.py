# Shadow-bank contagion simulator
__version__ = "1.0.0"
