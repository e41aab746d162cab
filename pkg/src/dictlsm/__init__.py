"""LSM key-value storage with order-preserving dictionary-encoded values."""
from .config import EngineConfig
from .dictionary import EVTable, OrderPreservingDictionary, merge_dictionaries
from .engine import Engine, Snapshot
from .errors import EngineError
from .memtable import Memtable
from .predicates import Equality, Prefix, Range
from .sct import SctReader, read_sct, write_sct

__all__ = ["Engine", "EngineConfig", "EngineError", "Equality", "EVTable", "Memtable",
           "OrderPreservingDictionary", "Prefix", "Range", "SctReader", "Snapshot", "merge_dictionaries",
           "read_sct", "write_sct"]
__version__ = "0.1.0"
