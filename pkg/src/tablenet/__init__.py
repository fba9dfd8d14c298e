"""Table relation discovery: candidate article pairs and table-pair alignment."""
__version__ = "0.1.0"
