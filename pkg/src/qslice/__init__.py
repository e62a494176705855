"""Flux-sliced measurement simulator with lattice phonon and Fock-space tools."""

from .body import BodyError, BodyState, Hole, Trajectory, line, segment, swept_cells, two_plates
from .config import ConfigError, RunConfig, validate
from .fock_kernel import (OccupancyCoefficients, annihilate, commutator_check, create, fock_battery,
                          kernel_raise_check, number, phonon_raise)
from .grid_field import (FieldError, Grid, ProbeSignal, WaveField, make_gaussian, make_rect_sheet,
                         observables, probe_uncertainty)
from .lattice_phonon import (LatticeModel, PhononOccupancy, classicality_energies, mode_width, normal_modes,
                             phonon_amplitude)
from .measurement import (ConservationError, SinkLeakError, SliceLedger, born_distribution, capture_flux,
                          conservation_audit, l1_distance, slice_overlap_monitor)
from .runner import ScenarioReport, fringe_analysis, run, run_with_ledger
from .scenarios import (BUNDLED, boosted, load_bundled, scenario_accelerating_surface, scenario_born_gaussian,
                        scenario_elongated_packet, scenario_flat_screen, scenario_holes_interference,
                        scenario_two_plates)
from .tdse import Potential, StepAuditError, evolve, step

__version__ = "0.1.0"
