"""semgate: a semantic-encryption gateway and its offline toolchain.

User text is transformed by a local encoder into an alternate semantic
context before reaching a cloud LLM; the cloud's response is restored to the
original context by a local decoder. This package houses the runtime
gateway, the distillation pipeline that builds the local models' training
data, the validation guard, the evaluation metrics, and a finite-space
secrecy simulator.
"""

__version__ = "0.1.0"
