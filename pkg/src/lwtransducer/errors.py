class LwtError(Exception):
    """Base class for errors raised by lwtransducer."""


class CorruptTensorFile(LwtError):
    def __init__(self, detail=""):
        msg = "corrupt tensor file"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class InfeasibleLabel(LwtError):
    """The label cannot be emitted within the available frames."""

    def __init__(self, detail="", item=None):
        self.item = item
        msg = "label too long for input"
        if item is not None:
            msg = f"item {item}: {msg}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class InvalidAlignment(LwtError):
    def __init__(self, detail=""):
        super().__init__(f"invalid alignment: {detail}" if detail else "invalid alignment")


class OracleLimit(LwtError):
    def __init__(self, detail=""):
        super().__init__(f"oracle limit: {detail}" if detail else "oracle limit")
