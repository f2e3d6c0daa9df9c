import hashlib
import json

import numpy as np

from CosmoTime.lamination import Leaf, MeasuredLamination
from CosmoTime.utils import NumpyEncoder, debug_info

MASK_64 = (1 << 64) - 1


def stream_id(stream) -> int:
    """64-bit stream id of a check name, integers are used as they are"""
    if isinstance(stream, (int, np.integer)):
        return int(stream) & MASK_64
    digest = hashlib.sha256(str(stream).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Sampling:
    """Class for reproducible sampling of base plane points, domain points and gradient lines

    All random draws of the package go through this class. The generator is a counter
    based Philox generator keyed by the 64-bit seed and a stream id derived from the
    name of the consumer, so independent consumers draw independent streams and the
    results do not depend on the order in which they are scheduled.

    The samples are stored in a numpy array of shape (M,m) where M is the number
    of samples and m is the dimension of the base plane.

    Attributes:
    public:
        M (int): Number of samples
        m (int): Dimension of the sampled space
        seed (int): 64-bit seed
        stream (str or int): Stream name or id
        generator (numpy.random.Generator): Philox generator of the stream
    private:
        _array (numpy.ndarray): Array containing the samples with shape (M,m)
        _bounds (numpy.ndarray): Array containing the bounds of the sampled box with shape (m,2)
        _values (numpy.ndarray): Values assigned to the samples
        _debug (bool): Debug flag
        _object_type (str): Type of the object used for saving and loading.

    Methods:
    public:
        random_uniform(overwrite : bool) -> None: Generates the samples using a uniform distribution
        extract(index : int) -> numpy.ndarray: Extracts a single sample from the array
        samples() -> numpy.ndarray: Returns the sampling array
        assign_values(f : callable) -> None: Assigns values to the samples using a function
        values() -> numpy.ndarray: Returns the values of the samples
        domain_points(dom : RegularDomain, levels : tuple) -> numpy.ndarray: Random points of a regular domain
        gradient_lines(dom : RegularDomain, level : float) -> list: Random gradient lines of a regular domain
        random_lamination(n_leaves : int) -> MeasuredLamination: Random lamination of disjoint caps
        quadruples(count : int, size : int) -> numpy.ndarray: Random quadruples of distinct indices
        save(filename : str) -> None: Saves the sampling object to a json file
        load(data : dict, overwrite : boolean) -> None: Loads the sampling object from a dictionary

    Example:
        >>> samples = Sampling(100, 2, seed = 7, stream = "pairing")
        >>> samples.set_domainBounds(np.array([[-1., 1.], [-1., 1.]]))
        >>> samples.random_uniform()

    Version:
        0.1
    """
    def __init__(self, M : int, m : int, seed : int = 0, stream = 0, debug : bool = False) -> None:
        """Constructor for the sampling object

        Args:
            M (int): Number of samples
            m (int): Dimension of the sampled space
            seed (int, optional): 64-bit seed. Default is 0
            stream (str or int, optional): Name or id of the random stream. Default is 0
            debug (bool, optional): If True, prints debug information. Default is False.

        Raises:
            AssertionError: If M or m are not greater than 0
        """
        assert M > 0, "Number of samples must be greater than 0"
        assert m > 0, "Dimension of the sampled space must be greater than 0"
        assert 0 <= int(seed) <= MASK_64, "Seed must be a 64-bit unsigned integer"

        self._object_type = "sampling"
        self.M = M
        self.m = m
        self.seed = int(seed)
        self.stream = stream
        self._debug = debug
        key = int(self.seed) | (stream_id(stream) << 64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def set_domainBounds(self, bounds : np.ndarray):
        """Sets the box the samples are drawn from

        Args:
            bounds (numpy.ndarray): Array (m,2) of lower and upper bounds
        """
        bounds = np.asarray(bounds, dtype=float)
        assert bounds.shape == (self.m, 2), "Bounds have wrong shape. Expected ({},2), got {}".format(self.m, bounds.shape)
        assert np.all(bounds[:, 0] < bounds[:, 1]), "Lower bounds must be below upper bounds"
        if hasattr(self, "_array"):
            raise AttributeError("Samples already exist. Bounds can not be changed")
        self._bounds = bounds

    def random_uniform(self, overwrite = False):
        """Generates the samples using a uniform distribution over the bounds

        Args:
            overwrite (bool, optional): If True, overwrites the existing samples. Default is False.

        Raises:
            AttributeError: If the samples already exist and overwrite is False
        """
        if not hasattr(self, "_bounds"):
            self._bounds = np.array([[-1.0]*self.m, [1.0]*self.m]).T
            debug_info(self._debug, "WARNING: NO BOUNDS DEFINED. USING DEFAULT BOUNDS [-1,1] FOR ALL COORDINATES")
        if hasattr(self, "_array") and not overwrite:
            raise AttributeError("Samples already exist. Use overwrite = True to overwrite them")
        self._array = self.generator.uniform(self._bounds[:, 0], self._bounds[:, 1], (self.M, self.m))

    def extract(self, index : int):
        """Extracts the sample at the given index.

        Raises:
            AssertionError: If the index is out of bounds
        """
        assert 0 <= index < self.M, "Index out of bounds"
        return self._array[index, :]

    def samples(self):
        assert hasattr(self, "_array"), "Samples have not been generated yet"
        return self._array

    def assign_values(self, f : callable, overwrite = False):
        """Assigns values to the sampling object by evaluating the given function at the samples

        Args:
            f (callable): The function to be evaluated
            overwrite (bool, optional): If True, overwrites existing values. Default is False

        Raises:
            AttributeError: If values exist and overwrite is False
        """
        assert callable(f), "Function must be callable"
        if hasattr(self, "_values") and not overwrite:
            raise AttributeError("Values already exist. Use overwrite=True to overwrite them")
        self._values = np.asarray([f(self.extract(i)) for i in range(self.M)])

    def values(self):
        assert hasattr(self, "_values"), "Values have not been assigned yet"
        return self._values

    def _spine_bounds(self, dom, padding : float):
        vertices = dom.spine.vertices[:, 1:]
        return np.stack([vertices.min(axis=0) - padding, vertices.max(axis=0) + padding], axis=1)

    def domain_points(self, dom, levels : tuple = (0.1, 2.0), padding : float = 1.0) -> np.ndarray:
        """Random points of a regular domain

        Base plane coordinates are drawn uniformly in the bounds (by default the bounding box of
        the spine padded by the given amount) and cosmological times uniformly in the level
        range; the points are the lifts onto the level graphs.

        Args:
            dom (RegularDomain): The domain
            levels (tuple, optional): Range of cosmological times. Default is (0.1, 2.0)
            padding (float, optional): Padding of the spine bounding box. Default is 1.0

        Returns:
            numpy.ndarray: Array (M, n+1) of points of the domain
        """
        assert self.m == dom.n, "Sampling dimension must match the spatial dimension of the domain"
        assert 0 < levels[0] <= levels[1], "Level range must be positive"
        if not hasattr(self, "_bounds"):
            self._bounds = self._spine_bounds(dom, padding)
        self.random_uniform(overwrite=True)
        a = self.generator.uniform(levels[0], levels[1], self.M)
        points = np.zeros((self.M, self.m + 1))
        for level in np.unique(a):
            rows = a == level
            points[rows] = dom.level_graph(level, self._array[rows])["p"]
        return points

    def gradient_lines(self, dom, level : float = 1.0, padding : float = 1.0) -> list:
        """Gradient lines through random points of a level

        Returns:
            list: M GradientLine objects
        """
        from CosmoTime.domain import GradientLine
        assert self.m == dom.n, "Sampling dimension must match the spatial dimension of the domain"
        if not hasattr(self, "_bounds"):
            self._bounds = self._spine_bounds(dom, padding)
        self.random_uniform(overwrite=True)
        graph = dom.level_graph(level, self._array)
        return [GradientLine(graph["r"][i], graph["N"][i], dom._stratum(int(graph["stratum"][i]), np.full(2, np.nan)))
                for i in range(self.M)]

    def random_lamination(self, n_leaves : int = 3, weights : tuple = (0.3, 1.0)) -> MeasuredLamination:
        """Random finite lamination whose leaves cut disjoint caps off the disk

        The circle is split into 2 n_leaves equal sectors, one endpoint is drawn in the middle
        60% of every sector and consecutive endpoints are joined by a leaf. The leaves do not cross;
        with two or more leaves each one subtends less than pi, so the caps are the regions 1..n_leaves
        around the base region.

        Args:
            n_leaves (int, optional): Number of leaves. Default is 3
            weights (tuple, optional): Range of the uniform leaf weights. Default is (0.3, 1.0)

        Returns:
            MeasuredLamination: The lamination, n_leaves + 1 regions
        """
        assert n_leaves >= 1, "At least one leaf is required"
        assert 0 < weights[0] <= weights[1], "Weights must be positive"
        sector = np.pi / n_leaves
        offset = self.generator.uniform(0.0, 2 * np.pi)
        angles = offset + sector * (np.arange(2 * n_leaves) + self.generator.uniform(0.2, 0.8, 2 * n_leaves))
        w = self.generator.uniform(weights[0], weights[1], n_leaves)
        leaves = [Leaf((float(angles[2 * k]), float(angles[2 * k + 1])), float(w[k])) for k in range(n_leaves)]
        debug_info(self._debug, f"Random lamination with {n_leaves} leaves, weights {np.round(w, 3)}")
        return MeasuredLamination(leaves, debug=self._debug)

    def quadruples(self, count : int, size : int) -> np.ndarray:
        """Random quadruples of pairwise distinct indices below size

        Returns:
            numpy.ndarray: Integer array (count, 4)
        """
        assert size >= 4, "At least 4 points are required"
        return np.argsort(self.generator.random((count, size)), axis=1)[:, :4]

    def save(self, filename : str):
        """Saves the sampling object to a json file

        Args:
            filename (str): Name of the file to be saved

        Raises:
            TypeError: If the filename is not a string
        """
        assert isinstance(filename, str), "Filename must be a string"
        data = {key: value for key, value in self.__dict__.items() if key not in ("generator", "_debug")}
        with open(filename, "w") as f:
            json.dump(data, f, cls=NumpyEncoder, indent = 3)

    def load(self, data : dict, overwrite = False):
        """Loads array data into the sampling object

        Args:
            data (dict): Dictionary containing numpy.ndarray data
            overwrite (bool, optional): If True, overwrites the existing samples. Default is False.

        Raises:
            AssertionError: If the array has the wrong shape
            AttributeError: If samples exist and overwrite is False
        """
        array = np.asarray(data["_array"])
        assert array.shape == (self.M, self.m), "Array has wrong shape"
        if hasattr(self, "_array") and not overwrite:
            raise AttributeError("Samples already exist. Use overwrite=True to overwrite them")
        self._array = array
        if "_values" in data:
            self._values = np.asarray(data["_values"])
        if "_bounds" in data:
            self._bounds = np.asarray(data["_bounds"])
