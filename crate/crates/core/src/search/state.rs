use std::collections::BTreeSet;

use crate::bounds::FixedByBounds;
use crate::error::{Error, Result};
use crate::model::{Network, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Active,
    Inactive,
    Undetermined,
}

/// Assignment of a phase to every ReLU node; the active, inactive and
/// undetermined sets partition the nodes by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialActivationState {
    phases: Vec<Vec<Phase>>,
}

impl PartialActivationState {
    pub fn all_undetermined(net: &Network) -> Self {
        Self {
            phases: (0..net.relu_layers().len())
                .map(|r| vec![Phase::Undetermined; net.relu_layer_width(r)])
                .collect(),
        }
    }

    /// Nodes fixed by bounds take their phase, the rest stay undetermined.
    pub fn from_fixed(net: &Network, fixed: &FixedByBounds) -> Self {
        let mut s = Self::all_undetermined(net);
        for &id in &fixed.active {
            s.phases[id.layer][id.node] = Phase::Active;
        }
        for &id in &fixed.inactive {
            s.phases[id.layer][id.node] = Phase::Inactive;
        }
        s
    }

    /// Builds a state from explicit active and inactive sets; every other
    /// node is undetermined.
    pub fn from_sets(
        net: &Network,
        active: &BTreeSet<NodeId>,
        inactive: &BTreeSet<NodeId>,
    ) -> Result<Self> {
        if let Some(id) = active.intersection(inactive).next() {
            return Err(Error::InconsistentState(format!(
                "node {id} is both active and inactive"
            )));
        }
        let mut s = Self::all_undetermined(net);
        for &id in active {
            net.check_node(id)?;
            s.phases[id.layer][id.node] = Phase::Active;
        }
        for &id in inactive {
            net.check_node(id)?;
            s.phases[id.layer][id.node] = Phase::Inactive;
        }
        Ok(s)
    }

    /// Fails with `InconsistentState` unless the layer shapes match `net`.
    pub fn check_shape(&self, net: &Network) -> Result<()> {
        let ok = self.phases.len() == net.relu_layers().len()
            && self
                .phases
                .iter()
                .enumerate()
                .all(|(r, layer)| layer.len() == net.relu_layer_width(r));
        if ok {
            Ok(())
        } else {
            Err(Error::InconsistentState(
                "state shape does not match the network's ReLU layers".into(),
            ))
        }
    }

    pub fn phase(&self, id: NodeId) -> Phase {
        self.phases[id.layer][id.node]
    }

    pub fn with_phase(&self, id: NodeId, phase: Phase) -> Self {
        let mut s = self.clone();
        s.phases[id.layer][id.node] = phase;
        s
    }

    fn nodes_in(&self, phase: Phase) -> Vec<NodeId> {
        self.phases
            .iter()
            .enumerate()
            .flat_map(|(r, layer)| {
                layer
                    .iter()
                    .enumerate()
                    .filter(move |(_, &p)| p == phase)
                    .map(move |(j, _)| NodeId::new(r, j))
            })
            .collect()
    }

    pub fn active(&self) -> Vec<NodeId> {
        self.nodes_in(Phase::Active)
    }

    pub fn inactive(&self) -> Vec<NodeId> {
        self.nodes_in(Phase::Inactive)
    }

    /// Undetermined nodes in ascending `(layer, node)` order.
    pub fn undetermined(&self) -> Vec<NodeId> {
        self.nodes_in(Phase::Undetermined)
    }

    pub fn undetermined_count(&self) -> usize {
        self.phases
            .iter()
            .flatten()
            .filter(|&&p| p == Phase::Undetermined)
            .count()
    }

    pub fn is_complete(&self) -> bool {
        self.undetermined_count() == 0
    }

    pub fn depth_fixed(&self) -> usize {
        self.phases.iter().flatten().count() - self.undetermined_count()
    }

    /// Compact text form, one character per node (`A`, `N`, `U`) and `/`
    /// between layers.
    pub fn fingerprint(&self) -> String {
        self.phases
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|p| match p {
                        Phase::Active => 'A',
                        Phase::Inactive => 'N',
                        Phase::Undetermined => 'U',
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("/")
    }
}
