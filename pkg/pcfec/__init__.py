"""Monte Carlo simulation of hard- and soft-aided decoders for eBCH product codes."""
