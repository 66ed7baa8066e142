"""Feature/head exporter: runs a torchvision backbone over a dataset and
writes the reactmap interchange files so the localization pipeline can
consume real images."""

from featexport.datasets import ImageSample, load_cub, load_image_list
from featexport.export import ExportJob, export

__version__ = "0.1.0"

__all__ = [
    "ExportJob",
    "ImageSample",
    "export",
    "load_cub",
    "load_image_list",
]
