"""fairprep: adversarial debiasing of tabular datasets plus a stratified
bias-audit harness for the models trained on them."""

__version__ = "0.1.0"
