import json
import numpy as np
from inspect import currentframe, getframeinfo

class NumpyEncoder(json.JSONEncoder):
    """Class for encoding numpy arrays to json

    This class is used to encode numpy arrays to json. It is used in the save methods of the
    lamination, sampling and report objects. Non finite floats (NaN, inf) are written as null.

    Methods:
    public:
        default(obj) -> json: Encodes the given object to json
        iterencode(obj) -> iterator: Encodes the given object with non finite floats replaced by null

    Example:
        >>> json.dumps(np.array([1,2,3]), cls=NumpyEncoder)
        '[1, 2, 3]'

    Version:
        0.1
    """

    def default(self, obj : object):
        """Returns a converted object that can be converted to json

        Args:
            obj (object): The object to be encoded

        Returns:
            (object) object that can be converted to json
        """
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        return super().default(obj)

    def iterencode(self, obj : object, _one_shot : bool = False):
        return super().iterencode(_finite(obj), _one_shot)


def _finite(obj : object):
    """Copy of obj with numpy containers unpacked and NaN or inf replaced by None"""
    if isinstance(obj, dict):
        return {key: _finite(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


class CosmoTimeError(ValueError):
    """Base class of all geometric failures raised by the package"""


class DimensionMismatch(CosmoTimeError):
    pass


class OffHyperboloid(CosmoTimeError):
    pass


class CrossingLeaves(CosmoTimeError):
    """Raised when the endpoint pairs of two leaves interleave on the ideal circle"""
    def __init__(self, i : int, j : int):
        super().__init__(f"Leaves {i} and {j} cross")
        self.i = i
        self.j = j


class AchronalityViolation(CosmoTimeError):
    pass


class NonConvexDomain(CosmoTimeError):
    pass


class OutsideDomain(CosmoTimeError):
    pass


class UnknownRegion(CosmoTimeError):
    pass


class InvalidGradientLine(CosmoTimeError):
    pass


class WindowTooSmall(CosmoTimeError):
    pass


class EmptyMesh(CosmoTimeError):
    pass


class OffLevel(CosmoTimeError):
    pass


class BoundaryNode(CosmoTimeError):
    pass


class FocalPoint(CosmoTimeError):
    pass


class InvalidRange(CosmoTimeError):
    pass


class IdMismatch(CosmoTimeError):
    pass


class MetricViolation(CosmoTimeError):
    pass


class ScenarioError(CosmoTimeError):
    """Raised for malformed or invalid scenario files

    Attributes:
        field (str): Path of the offending field, e.g. "lamination.leaves[2]"
    """
    def __init__(self, message : str, field : str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def load(filename : str):
    """Loads a saved object from a json file

    Args:
        filename (str): The name of the file to be loaded

    Returns:
        object: The lamination or sampling object

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the stored object type is unknown
    """
    try:
        with open(filename, "r") as f:
            data=json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError("File not found")
    data_type = data["_object_type"]
    if data_type == "sampling":
        from CosmoTime.sampling import Sampling
        object = Sampling(data["M"], data["m"], seed = data["seed"], stream = data["stream"])
        object.load(data, overwrite=True)
    elif data_type == "lamination":
        from CosmoTime.lamination import MeasuredLamination
        object = MeasuredLamination.from_dict(data)
    else:
        raise ValueError(f"Unknown object type {data_type}")
    return object

def debug_info(debug : bool, message : str):
    """Prints debug information

    Prints the given message if the debug flag is set to True

    Args:
        message (str): The message to be printed
    """
    if debug:
        frameinfo = getframeinfo(currentframe().f_back)
        print(f"DEBUG: File \"{frameinfo.filename}\", line {frameinfo.lineno}, module {frameinfo.function} \n\t{message}")
