"""Normal-form games, static solution concepts and multiagent learning dynamics."""

from magt.errors import (
    ConfigError,
    DynamicsDomainError,
    GameError,
    ParseError,
    PreconditionError,
    UnsupportedInstance,
    ValidationError,
)
from magt.game import (
    Game,
    MixedProfile,
    MixedStrategy,
    SymmetricGame,
    embed_symmetric,
    expected_utility,
    load_game,
    save_game,
    utility,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DynamicsDomainError",
    "Game",
    "GameError",
    "MixedProfile",
    "MixedStrategy",
    "ParseError",
    "PreconditionError",
    "SymmetricGame",
    "UnsupportedInstance",
    "ValidationError",
    "embed_symmetric",
    "expected_utility",
    "load_game",
    "save_game",
    "utility",
]
