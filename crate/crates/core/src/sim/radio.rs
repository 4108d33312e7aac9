use serde::{Deserialize, Serialize};

/// Transmit or receive side of a radio operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioRole {
    Tx,
    Rx,
}

/// First-order radio energy model: electronics cost per bit on both sides,
/// plus a free-space amplifier term growing with `d²` on transmit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    /// Joules per bit.
    pub e_elec: f64,
    /// Joules per bit per m².
    pub e_amp: f64,
    /// Joules each node starts with.
    pub initial_energy: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self { e_elec: 50e-9, e_amp: 100e-12, initial_energy: 40.0 }
    }
}

impl RadioModel {
    /// Energy needed to send or receive `bits` over `distance` meters.
    pub fn cost(&self, role: RadioRole, bits: u32, distance: f64) -> f64 {
        let k = bits as f64;
        match role {
            RadioRole::Tx => self.e_elec * k + self.e_amp * k * distance * distance,
            RadioRole::Rx => self.e_elec * k,
        }
    }
}

/// Residual/initial energy pair for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEnergy {
    pub residual: f64,
    pub initial: f64,
}

impl NodeEnergy {
    pub fn new(initial: f64) -> Self {
        Self { residual: initial, initial }
    }

    pub fn is_depleted(&self) -> bool {
        self.residual <= 0.0
    }

    pub fn ratio(&self) -> f64 {
        self.residual / self.initial
    }

    /// Removes up to `joules`, returning what was actually taken. The residual
    /// never goes below zero.
    pub fn debit(&mut self, joules: f64) -> f64 {
        if self.residual <= 0.0 {
            return 0.0;
        }
        let taken = joules.min(self.residual);
        self.residual -= taken;
        if self.residual <= 0.0 {
            self.residual = 0.0;
        }
        taken
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_order_costs() {
        let r = RadioModel::default();
        assert_relative_eq!(r.cost(RadioRole::Rx, 2000, 250.0), 100e-6, max_relative = 1e-12);
        assert_relative_eq!(r.cost(RadioRole::Tx, 2000, 250.0), 12.6e-3, max_relative = 1e-12);
        assert_relative_eq!(r.cost(RadioRole::Tx, 2000, 0.0), 100e-6, max_relative = 1e-12);
    }

    #[test]
    fn debit_clamps_at_zero() {
        let mut e = NodeEnergy::new(1e-3);
        assert_eq!(e.debit(4e-4), 4e-4);
        let taken = e.debit(1.0);
        assert_relative_eq!(taken, 6e-4, max_relative = 1e-12);
        assert!(e.is_depleted());
        assert_eq!(e.residual, 0.0);
        assert_eq!(e.debit(1.0), 0.0);
    }
}
