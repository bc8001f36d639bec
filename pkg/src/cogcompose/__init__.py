"""Cognitive-agent service composition for mobile ad-hoc networks, with a deterministic simulator."""
from .attention import C1, C2, BehaviorNetwork, GlobalParams
from .agent import CognitiveAgent, LocalExecutor
from .domain import AbstractService, Catalog, ConcreteService, Goal, Premise, QoSVector

__version__ = "0.1.0"

__all__ = ["C1", "C2", "BehaviorNetwork", "GlobalParams", "CognitiveAgent", "LocalExecutor",
           "AbstractService", "Catalog", "ConcreteService", "Goal", "Premise", "QoSVector"]
