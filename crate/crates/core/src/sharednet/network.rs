use super::mode::SharingMode;
use crate::netcore::{
    apply_update, backward_into, forward, init_parameters, Checkpoint, ForwardCache,
    GradientStore, NetworkTopology, OptimizerConfig, OptimizerState, ParameterStore,
    RecurrentState,
};
use crate::pruning::{
    generate_group_tickets, generate_single_ticket, generate_unstructured_masks, MaskFile,
    NeuronMaskGroup, PruningSchedule, WeightMask,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum AgentMasks {
    None,
    /// Structured masks with their activation gates precomputed.
    Neurons { group: NeuronMaskGroup, gates: Vec<Vec<Vec<f64>>> },
    /// Per-weight masks plus each agent's effective parameters `θ ⊙ M_i`.
    Weights { masks: Vec<WeightMask>, effective: Vec<ParameterStore>, schedule: PruningSchedule, seed: u64 },
}

/// One forward step of one agent.
#[derive(Debug, Clone)]
pub struct AgentStep {
    pub output: Vec<f64>,
    pub state: RecurrentState,
    pub cache: ForwardCache,
}

impl AgentStep {
    pub fn hidden_features(&self) -> Vec<Vec<f64>> {
        self.cache.hidden_activations().map(<[f64]>::to_vec).collect()
    }
}

/// Trainable-parameter accounting; masks are not parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    pub trainable: usize,
    pub per_network: usize,
    pub networks: usize,
    /// First-layer weights attached to one-hot agent inputs (per network).
    pub one_hot_weights: usize,
}

/// N agents bound to shared root parameters under a [`SharingMode`].
#[derive(Debug, Clone)]
pub struct SharedAgentNetwork {
    mode: SharingMode,
    n_agents: usize,
    observation_width: usize,
    topology: NetworkTopology,
    roots: Vec<ParameterStore>,
    assignment: Vec<usize>,
    masks: AgentMasks,
    optimizers: Vec<OptimizerState>,
}

impl SharedAgentNetwork {
    /// Builds roots and masks. `base` takes the raw observation as input;
    /// one-hot modes widen its first layer by `n_agents`. Root parameters
    /// depend only on `init_seed` and the effective topology, masks only on
    /// `mask_seed`.
    pub fn new(
        base: &NetworkTopology,
        mode: SharingMode,
        schedule: &PruningSchedule,
        n_agents: usize,
        init_seed: u64,
        mask_seed: u64,
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::config("n_agents", "at least one agent is required"));
        }
        let assignment = mode.assignment(n_agents)?;
        let topology =
            if mode.uses_one_hot() { base.with_extra_inputs(n_agents)? } else { base.clone() };
        let n_roots = assignment.iter().max().map_or(1, |m| m + 1);
        let roots = (0..n_roots)
            .map(|c| init_parameters(&topology, derive_seed(init_seed, &format!("root-{c}"))))
            .collect();
        let masks = match &mode {
            SharingMode::SnpPs | SharingMode::SnpPsId => {
                neuron_masks(generate_group_tickets(&topology, schedule, n_agents, mask_seed)?)
            }
            SharingMode::SnpNps => {
                neuron_masks(generate_single_ticket(&topology, schedule, n_agents, mask_seed)?)
            }
            SharingMode::UsnpPs => AgentMasks::Weights {
                masks: generate_unstructured_masks(&topology, schedule, n_agents, mask_seed)?,
                effective: Vec::new(),
                schedule: schedule.clone(),
                seed: mask_seed,
            },
            SharingMode::Fups | SharingMode::FupsId | SharingMode::Grouped(_) => AgentMasks::None,
        };
        let mut net = Self {
            mode,
            n_agents,
            observation_width: base.input_width(),
            optimizers: vec![OptimizerState::new(topology.parameter_count()); n_roots],
            topology,
            roots,
            assignment,
            masks,
        };
        net.refresh_effective();
        Ok(net)
    }

    /// Wraps explicit roots and (for structured modes) an explicit mask group.
    pub fn from_parts(
        mode: SharingMode,
        n_agents: usize,
        topology: NetworkTopology,
        roots: Vec<ParameterStore>,
        group: Option<NeuronMaskGroup>,
    ) -> Result<Self> {
        let assignment = mode.assignment(n_agents)?;
        let n_roots = assignment.iter().max().map_or(1, |m| m + 1);
        if roots.len() != n_roots || roots.iter().any(|r| !r.matches(&topology)) {
            return Err(Error::usage("root stores do not match the topology or cluster count"));
        }
        let observation_width =
            topology.input_width() - if mode.uses_one_hot() { n_agents } else { 0 };
        let masks = match (&mode, group) {
            (SharingMode::SnpPs | SharingMode::SnpPsId | SharingMode::SnpNps, Some(g)) => {
                if g.n_agents() != n_agents || g.masks.iter().any(|m| !m.matches(&topology)) {
                    return Err(Error::usage("mask group does not match the network"));
                }
                neuron_masks(g)
            }
            (SharingMode::SnpPs | SharingMode::SnpPsId | SharingMode::SnpNps, None) => {
                return Err(Error::usage("structured sharing modes need a mask group"))
            }
            (SharingMode::UsnpPs, _) => {
                return Err(Error::usage("per-weight masks are rebuilt with `new`, not `from_parts`"))
            }
            _ => AgentMasks::None,
        };
        Ok(Self {
            mode,
            n_agents,
            observation_width,
            optimizers: vec![OptimizerState::new(topology.parameter_count()); n_roots],
            topology,
            roots,
            assignment,
            masks,
        })
    }

    fn refresh_effective(&mut self) {
        if let AgentMasks::Weights { masks, effective, .. } = &mut self.masks {
            *effective = masks
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut p = self.roots[self.assignment[i]].clone();
                    m.apply(p.values_mut());
                    p
                })
                .collect();
        }
    }

    pub fn mode(&self) -> &SharingMode {
        &self.mode
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn observation_width(&self) -> usize {
        self.observation_width
    }

    pub fn output_width(&self) -> usize {
        self.topology.output_width()
    }

    /// Effective topology (including one-hot inputs where used).
    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn roots(&self) -> &[ParameterStore] {
        &self.roots
    }

    pub fn roots_mut(&mut self) -> &mut [ParameterStore] {
        &mut self.roots
    }

    /// Replaces every root with `other`'s; masks are left untouched.
    pub fn copy_parameters_from(&mut self, other: &SharedAgentNetwork) {
        self.roots.clone_from(&other.roots);
        self.refresh_effective();
    }

    pub fn root_of(&self, agent: usize) -> usize {
        self.assignment[agent]
    }

    pub fn neuron_masks(&self) -> Option<&NeuronMaskGroup> {
        match &self.masks {
            AgentMasks::Neurons { group, .. } => Some(group),
            _ => None,
        }
    }

    pub fn weight_masks(&self) -> Option<&[WeightMask]> {
        match &self.masks {
            AgentMasks::Weights { masks, .. } => Some(masks),
            _ => None,
        }
    }

    pub fn initial_state(&self) -> RecurrentState {
        RecurrentState::initial(&self.topology)
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.n_agents {
            return Err(Error::usage(format!(
                "unknown agent id {agent} (network has {} agents)",
                self.n_agents
            )));
        }
        Ok(())
    }

    /// Network input for `agent`: the observation, plus its one-hot id where used.
    pub fn agent_input(&self, agent: usize, observation: &[f64]) -> Result<Vec<f64>> {
        self.check_agent(agent)?;
        if observation.len() != self.observation_width {
            return Err(Error::usage(format!(
                "observation has {} values, network expects {}",
                observation.len(),
                self.observation_width
            )));
        }
        let mut x = observation.to_vec();
        if self.mode.uses_one_hot() {
            x.extend((0..self.n_agents).map(|i| if i == agent { 1.0 } else { 0.0 }));
        }
        Ok(x)
    }

    fn agent_params(&self, agent: usize) -> &ParameterStore {
        match &self.masks {
            AgentMasks::Weights { effective, .. } => &effective[agent],
            _ => &self.roots[self.assignment[agent]],
        }
    }

    fn agent_gates(&self, agent: usize) -> Option<&[Vec<f64>]> {
        match &self.masks {
            AgentMasks::Neurons { gates, .. } => Some(&gates[agent]),
            _ => None,
        }
    }

    pub fn agent_forward(
        &self,
        agent: usize,
        observation: &[f64],
        state: &RecurrentState,
    ) -> Result<AgentStep> {
        let x = self.agent_input(agent, observation)?;
        let pass =
            forward(self.agent_params(agent), &self.topology, &x, state, self.agent_gates(agent))?;
        Ok(AgentStep { output: pass.output, state: pass.state, cache: pass.cache })
    }

    /// Backpropagates through one cached step of `agent` into `grads`, which
    /// is congruent with the root. Returns the gradient for the incoming
    /// recurrent state. Call [`Self::mask_agent_gradient`] before accumulation.
    pub fn agent_backward(
        &self,
        agent: usize,
        cache: &ForwardCache,
        output_gradient: &[f64],
        state_gradient: Option<&[f64]>,
        grads: &mut GradientStore,
    ) -> Result<Vec<f64>> {
        self.check_agent(agent)?;
        let flow = backward_into(
            self.agent_params(agent),
            &self.topology,
            cache,
            output_gradient,
            state_gradient,
            grads,
        )?;
        Ok(flow.state)
    }

    /// Chain rule through `θ ⊙ M_i` for per-weight masks. Structured masks
    /// already zero their gradients through the activation gates.
    pub fn mask_agent_gradient(&self, agent: usize, grads: &mut GradientStore) {
        if let AgentMasks::Weights { masks, .. } = &self.masks {
            masks[agent].apply(grads.values_mut());
        }
    }

    pub fn zero_gradients(&self) -> Vec<GradientStore> {
        (0..self.n_agents).map(|_| GradientStore::zeros(&self.topology)).collect()
    }

    /// Averages per-agent gradients into one gradient per root: the sum over
    /// agents divided by N, or by cluster size under grouped sharing.
    pub fn accumulate_agent_gradients(&self, per_agent: &[GradientStore]) -> Result<Vec<GradientStore>> {
        let mut out: Vec<GradientStore> =
            self.roots.iter().map(|_| GradientStore::zeros(&self.topology)).collect();
        self.accumulate_agent_gradients_into(per_agent, &mut out)?;
        Ok(out)
    }

    /// As [`Self::accumulate_agent_gradients`], overwriting `out` (one store per root).
    pub fn accumulate_agent_gradients_into(&self, per_agent: &[GradientStore], out: &mut [GradientStore]) -> Result<()> {
        if per_agent.len() != self.n_agents {
            return Err(Error::usage(format!(
                "expected {} agent gradients, got {}",
                self.n_agents,
                per_agent.len()
            )));
        }
        let len = self.topology.parameter_count();
        if per_agent.iter().chain(out.iter()).any(|g| g.len() != len) || out.len() != self.roots.len() {
            return Err(Error::usage("agent gradient shape does not match the root"));
        }
        out.iter_mut().for_each(GradientStore::clear);
        let mut members = vec![0usize; self.roots.len()];
        for (agent, g) in per_agent.iter().enumerate() {
            let c = self.assignment[agent];
            out[c].add_assign(g);
            members[c] += 1;
        }
        for (g, m) in out.iter_mut().zip(members) {
            if m > 0 {
                g.scale(1.0 / m as f64);
            }
        }
        Ok(())
    }

    pub fn zero_root_gradients(&self) -> Vec<GradientStore> {
        self.roots.iter().map(|_| GradientStore::zeros(&self.topology)).collect()
    }

    /// One optimizer step per root.
    pub fn apply_gradients(&mut self, root_grads: &[GradientStore], config: &OptimizerConfig) -> Result<()> {
        if root_grads.len() != self.roots.len() {
            return Err(Error::usage("one gradient per root is required"));
        }
        for ((p, g), s) in self.roots.iter_mut().zip(root_grads).zip(&mut self.optimizers) {
            apply_update(p, g, s, config)?;
        }
        self.refresh_effective();
        Ok(())
    }

    pub fn parameter_count(&self) -> ParameterCount {
        let per_network = self.topology.parameter_count();
        let first_hidden = self.topology.layers()[0].output_width;
        let one_hot = if self.mode.uses_one_hot() { self.n_agents } else { 0 };
        ParameterCount {
            trainable: per_network * self.roots.len(),
            per_network,
            networks: self.roots.len(),
            one_hot_weights: one_hot * first_hidden,
        }
    }

    pub fn to_checkpoint(&self, provenance: impl Into<String>) -> Checkpoint {
        Checkpoint {
            provenance: provenance.into(),
            topology: self.topology.clone(),
            stores: self.roots.clone(),
        }
    }

    /// Mask file describing this network's sharing layout.
    pub fn mask_file(&self) -> MaskFile {
        let hash = self.topology.fingerprint();
        let mut file = match &self.masks {
            AgentMasks::Neurons { group, .. } => MaskFile::from_group(hash, group),
            AgentMasks::Weights { schedule, seed, .. } => MaskFile {
                topology_hash: hash,
                schedule: schedule.clone(),
                seed: *seed,
                n_agents: self.n_agents,
                attributes: Vec::new(),
                masks: Vec::new(),
            },
            AgentMasks::None => MaskFile {
                topology_hash: hash,
                schedule: PruningSchedule::dense(self.topology.hidden_widths().len()),
                seed: 0,
                n_agents: self.n_agents,
                attributes: Vec::new(),
                masks: Vec::new(),
            },
        };
        file.attributes.push(("mode".into(), self.mode.name().into()));
        if let SharingMode::Grouped(a) = &self.mode {
            let s: Vec<String> = a.iter().map(usize::to_string).collect();
            file.attributes.push(("groups".into(), s.join(",")));
        }
        file
    }

    /// Rebuilds a network from a checkpoint and its mask file.
    pub fn from_checkpoint(checkpoint: &Checkpoint, masks: &MaskFile) -> Result<Self> {
        if masks.topology_hash != checkpoint.topology.fingerprint() {
            return Err(Error::Format("mask file belongs to a different topology".into()));
        }
        let mode_name = masks.attribute("mode").ok_or_else(|| Error::Format("mask file has no mode".into()))?;
        let mode: SharingMode = match masks.attribute("groups") {
            Some(g) => format!("{mode_name}:{g}").parse()?,
            None => mode_name.parse()?,
        };
        if mode == SharingMode::UsnpPs {
            let weight_masks = generate_unstructured_masks(
                &checkpoint.topology,
                &masks.schedule,
                masks.n_agents,
                masks.seed,
            )?;
            let assignment = mode.assignment(masks.n_agents)?;
            let topology = checkpoint.topology.clone();
            let mut net = Self {
                observation_width: topology.input_width(),
                optimizers: vec![OptimizerState::new(topology.parameter_count())],
                mode,
                n_agents: masks.n_agents,
                topology,
                roots: checkpoint.stores.clone(),
                assignment,
                masks: AgentMasks::Weights {
                    masks: weight_masks,
                    effective: Vec::new(),
                    schedule: masks.schedule.clone(),
                    seed: masks.seed,
                },
            };
            net.refresh_effective();
            return Ok(net);
        }
        Self::from_parts(
            mode,
            masks.n_agents,
            checkpoint.topology.clone(),
            checkpoint.stores.clone(),
            masks.group(),
        )
    }
}

fn neuron_masks(group: NeuronMaskGroup) -> AgentMasks {
    let gates = group.masks.iter().map(|m| m.gates()).collect();
    AgentMasks::Neurons { group, gates }
}
