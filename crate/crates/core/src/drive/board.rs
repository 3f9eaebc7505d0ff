//! Virtual board: what the plate shows under a received drive.

use crate::error::Result;
use crate::pattern::{actuator_phasor_energy, ActuatorPhasor, EnergyImage};
use crate::plate::ModalBasis;

pub fn board_sim(received: &ActuatorPhasor, basis: &ModalBasis) -> Result<EnergyImage> {
    actuator_phasor_energy(basis, received)
}
