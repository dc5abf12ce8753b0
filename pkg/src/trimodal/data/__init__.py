from pathlib import Path


def toy_dataset_dir() -> Path:
    """The bundled 30-document BEIR-format toy dataset."""
    return Path(__file__).resolve().parent / "toy"
