from .distributions import DistributionError, sampler
from .streams import BufferedStream, Purpose, StreamLabel, derive_stream, open_stream

__all__ = ["DistributionError", "sampler", "BufferedStream", "Purpose", "StreamLabel", "derive_stream", "open_stream"]
