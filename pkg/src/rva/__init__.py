"""Rendezvous of mobile agents in networks with one blocking malicious agent.

Simulation engine, the RV-OR / RV-UR / RV-Mesh protocols, adversarial
schedulers, an explicit-state model checker and the separability analysis.
"""

__version__ = "0.1.0"
