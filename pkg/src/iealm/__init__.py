"""A chaotic image cipher built on the 2D lag-complex Logistic map, and a chosen-plaintext attack that breaks it."""

from .attack import EquivalentKey, run_attack, recover_plaintext
from .cipher import decrypt_channel, decrypt_rgb, encrypt_channel, encrypt_rgb
from .keystream import ChannelSums, KeyMaterial, Keystream, generate_keystream
from .oracle import LocalOracle, OracleConfig, RemoteOracle

__all__ = [
    "ChannelSums", "EquivalentKey", "KeyMaterial", "Keystream", "LocalOracle", "OracleConfig",
    "RemoteOracle", "decrypt_channel", "decrypt_rgb", "encrypt_channel", "encrypt_rgb",
    "generate_keystream", "recover_plaintext", "run_attack",
]
