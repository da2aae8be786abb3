"""Unsupervised online video object segmentation.

Fuses salient-motion detection on optical flow with instance-proposal
objectness, refines each frame with forward-propagated previous
segmentations, and polishes boundaries with a color-model graph cut.
"""

from .core import (BinaryMask, ConfigError, FlowField, Frame, PipelineConfig,
                   SaliencySource, ScalarMap, validate_config)
from .crf import (ColorGMM, PairwiseWeights, UnaryCosts, brute_force_labeling,
                  crf_refine, energy, fit_gmm, min_cut_labeling,
                  pairwise_weights, unary_costs)
from .dataset import DatasetLayout
from .flow import (BlockMatchParams, WarpSampling, estimate_flow, read_flo,
                   warp_mask, warp_scalar_map, write_flo)
from .homography import (Correspondences, Homography, RansacParams,
                         dlt_homography, flow_correspondences,
                         normalize_points, ransac_homography,
                         residual_motion_map, symmetric_transfer_error)
from .masks import (Histogram256, ThresholdSet, binarize, dilate, fuse,
                    histogram_of, otsu_thresholds)
from .metrics import (SequenceScores, boundary_fmeasure, iou, region_metrics,
                      score_sequence)
from .pipeline import StageSelection, ablation_report, run_pipeline
from .propagation import (MaskBuffer, accumulated_prior, advance_buffer,
                          refine_motion_map, refine_objectness_map,
                          refined_segmentation)
from .proposals import (InstanceProposal, ProposalSet, load_proposals,
                        objectness_mask, save_proposals)
from .saliency import (FeatureImage, SeedSet, boundary_seeds,
                       encode_flow_features, exact_barrier_distance,
                       global_contrast, mbd_saliency, salient_motion_map)
from .synth import SynthDataset, SynthParams, synth_sequence, write_dataset

__version__ = "0.1.0"
