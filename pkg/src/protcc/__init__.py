"""Protein combinatorial complexes, four-rank featurization, local frames
and a numpy reference forward pass of TCPNet."""

from .complex import (ProteinCC, adjacency, build_knn_edges, build_pcc, build_sse_cells, degree,
                      incidence, laplacian, outer_neighborhoods)
from .errors import (PccError, MalformedRecord, NoBackbone, LengthMismatch, UnknownSymbol,
                     MissingAtom, TooFewNodes, SameRank, OddDim, DegenerateCell, ZeroSpectrum,
                     CoincidentPoints, DegenerateCloud, ZeroCom, IsolatedNode, ShapeMismatch,
                     BadConfig, CorruptBlob, VersionMismatch, MissingProteinChannel)
from .features import SCALAR_WIDTHS, VECTOR_WIDTHS, FeatureBundle, featurize
from .frames import edge_frame, protein_frame, scalarize
from .serialize import PccBundle, load_params, save_params
from .sse import assign_sse
from .structure_io import (AnnotationTrack, ProteinStructure, TrackKind, load_annotations,
                           parse_pdb, validate_backbone)
from .tcpnet import ModelConfig, ModelParams, Readout, forward, init_params, readout

__version__ = "0.1.0"
