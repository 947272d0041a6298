//! Cooperative grid world shared by the three benchmark domains.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::spec::{ActingCounts, AgentKind, DomainSpec, Level, TaskKind};

pub const NUM_ACTIONS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
    Act,
    Stay,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Left,
        Action::Right,
        Action::Up,
        Action::Down,
        Action::Act,
        Action::Stay,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("action index {i} out of range 0..{NUM_ACTIONS}")))
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Action::Left => "L",
            Action::Right => "R",
            Action::Up => "U",
            Action::Down => "D",
            Action::Act => "A",
            Action::Stay => "S",
        }
    }
}

/// Grid coordinates, `x` to the right and `y` downwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentRecord {
    pub id: usize,
    pub kind: AgentKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord {
    pub pos: Pos,
    pub kind: TaskKind,
    pub level: Level,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub width: usize,
    pub height: usize,
    pub agents: Vec<AgentRecord>,
    pub tasks: Vec<TaskRecord>,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub rewards: Vec<f64>,
    pub done: bool,
}

impl EnvState {
    pub fn tasks_remaining(&self) -> usize {
        self.tasks.iter().filter(|t| !t.done).count()
    }

    pub fn is_terminal(&self, spec: &DomainSpec) -> bool {
        self.tasks_remaining() == 0 || self.step >= spec.horizon
    }

    fn cell_pos(&self, cell: usize) -> Pos {
        Pos {
            x: cell % self.width,
            y: cell / self.width,
        }
    }
}

/// Place tasks on distinct cells and agents anywhere, from `seed` alone.
pub fn reset(spec: &DomainSpec, seed: u64) -> Result<EnvState> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = spec.cells();
    let mut state = EnvState {
        width: spec.width,
        height: spec.height,
        agents: Vec::with_capacity(spec.num_agents()),
        tasks: Vec::with_capacity(spec.tasks),
        step: 0,
    };
    let kind = spec.domain.task_kind();
    for cell in index::sample(&mut rng, cells, spec.tasks) {
        state.tasks.push(TaskRecord {
            pos: state.cell_pos(cell),
            kind,
            level: Level::Low,
            done: false,
        });
    }
    for (id, kind) in spec.agent_kinds().into_iter().enumerate() {
        let pos = state.cell_pos(rng.gen_range(0..cells));
        state.agents.push(AgentRecord { id, kind, pos });
    }
    Ok(state)
}

fn apply_move(pos: Pos, action: Action, width: usize, height: usize) -> Pos {
    match action {
        Action::Left => Pos { x: pos.x.saturating_sub(1), ..pos },
        Action::Right => Pos { x: (pos.x + 1).min(width - 1), ..pos },
        Action::Up => Pos { y: pos.y.saturating_sub(1), ..pos },
        Action::Down => Pos { y: (pos.y + 1).min(height - 1), ..pos },
        Action::Act | Action::Stay => pos,
    }
}

/// Advance one step: moves, then task resolution, then escalation.
///
/// A random number is drawn for a task only when its completion probability
/// is strictly between 0 and 1, and for escalation only for unfinished
/// low-level tasks in escalating variants.
pub fn step<R: Rng + ?Sized>(
    spec: &DomainSpec,
    state: &EnvState,
    actions: &[usize],
    rng: &mut R,
) -> Result<StepResult> {
    if state.is_terminal(spec) {
        return Err(Error::Terminal);
    }
    if actions.len() != state.agents.len() {
        return Err(Error::DimensionMismatch {
            context: "joint action",
            expected: state.agents.len(),
            actual: actions.len(),
        });
    }
    let actions: Vec<Action> = actions.iter().map(|&a| Action::from_index(a)).collect::<Result<_>>()?;

    let mut next = state.clone();
    for (agent, &action) in next.agents.iter_mut().zip(&actions) {
        agent.pos = apply_move(agent.pos, action, spec.width, spec.height);
    }

    let mut rewards = vec![0.0; next.agents.len()];
    for task in next.tasks.iter_mut().filter(|t| !t.done) {
        let mut counts = ActingCounts::default();
        let mut acting = Vec::new();
        for (agent, &action) in next.agents.iter().zip(&actions) {
            if action == Action::Act && agent.pos == task.pos {
                counts.add(agent.kind);
                acting.push(agent.id);
            }
        }
        let p = spec.completion_probability(task.level, counts);
        let completed = if p >= 1.0 {
            true
        } else if p > 0.0 {
            rng.gen::<f64>() < p
        } else {
            false
        };
        if completed {
            task.done = true;
            let share = spec.reward / acting.len() as f64;
            for id in acting {
                rewards[id] += share;
            }
        }
    }

    if spec.has_escalation() {
        for task in next.tasks.iter_mut().filter(|t| !t.done && t.level == Level::Low) {
            if rng.gen::<f64>() < spec.escalation {
                task.level = Level::High;
            }
        }
    }

    next.step += 1;
    let done = next.is_terminal(spec);
    Ok(StepResult {
        state: next,
        rewards,
        done,
    })
}

/// Number of occupancy planes in an observation.
pub const PLANES: usize = 10;

/// `PLANES * width * height + 2 + num_agents`.
pub fn observation_len(spec: &DomainSpec) -> usize {
    PLANES * spec.cells() + 2 + spec.num_agents()
}

fn task_plane(kind: TaskKind, level: Level) -> usize {
    let base = match kind {
        TaskKind::Box => 3,
        TaskKind::Fire => 5,
        TaskKind::Victim => 7,
    };
    base + matches!(level, Level::High) as usize
}

/// Observation for one agent.
///
/// Layout, each plane `width * height` cells in row-major order:
///
/// | planes | content |
/// |---|---|
/// | 0..3 | number of generic agents, fire trucks, ambulances per cell |
/// | 3..9 | unfinished tasks: box low/high, fire low/high, victim low/high |
/// | 9 | finished tasks |
///
/// followed by the agent's own position scaled to `[0, 1]` and a one-hot id.
pub fn encode_observation(state: &EnvState, agent: usize) -> Result<Vec<f64>> {
    let me = state.agents.get(agent).ok_or_else(|| {
        Error::InvalidArgument(format!("agent id {agent} out of range 0..{}", state.agents.len()))
    })?;
    let cells = state.width * state.height;
    let mut obs = vec![0.0; PLANES * cells + 2 + state.agents.len()];
    let cell = |p: Pos| p.y * state.width + p.x;
    for a in &state.agents {
        let plane = match a.kind {
            AgentKind::Generic => 0,
            AgentKind::Firetruck => 1,
            AgentKind::Ambulance => 2,
        };
        obs[plane * cells + cell(a.pos)] += 1.0;
    }
    for t in &state.tasks {
        let plane = if t.done { 9 } else { task_plane(t.kind, t.level) };
        obs[plane * cells + cell(t.pos)] = 1.0;
    }
    let scale = |v: usize, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.0 };
    obs[PLANES * cells] = scale(me.pos.x, state.width);
    obs[PLANES * cells + 1] = scale(me.pos.y, state.height);
    obs[PLANES * cells + 2 + agent] = 1.0;
    Ok(obs)
}

/// Sum of per-agent undiscounted episode returns.
pub fn social_welfare(per_agent_returns: &[f64]) -> f64 {
    per_agent_returns.iter().sum()
}

/// One trajectory-log line: step, joint action, per-agent rewards, tasks remaining.
pub fn trajectory_line(step: usize, actions: &[usize], rewards: &[f64], tasks_remaining: usize) -> String {
    let joint: Vec<&str> = actions
        .iter()
        .map(|&a| Action::from_index(a).map(Action::short_name).unwrap_or("?"))
        .collect();
    let rewards: Vec<String> = rewards.iter().map(|r| r.to_string()).collect();
    format!("{step}\t{}\t{}\t{tasks_remaining}", joint.join(""), rewards.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::spec::{Domain, Variant};
    use rand::rngs::mock::StepRng;

    fn single_agent_state(spec: &DomainSpec, agent_pos: Pos, task_pos: Pos) -> EnvState {
        let mut s = reset(spec, 0).unwrap();
        s.agents.truncate(1);
        s.agents[0].pos = agent_pos;
        s.tasks.truncate(1);
        s.tasks[0].pos = task_pos;
        s
    }

    #[test]
    fn reset_is_deterministic() {
        let spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V1);
        assert_eq!(reset(&spec, 7).unwrap(), reset(&spec, 7).unwrap());
        assert_ne!(reset(&spec, 7).unwrap(), reset(&spec, 8).unwrap());
    }

    #[test]
    fn reset_places_tasks_on_distinct_cells() {
        let spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V1).with_grid(2, 2).with_tasks(4);
        for seed in 0..50 {
            let s = reset(&spec, seed).unwrap();
            let mut cells: Vec<(usize, usize)> = s.tasks.iter().map(|t| (t.pos.x, t.pos.y)).collect();
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), 4);
        }
        let too_many = spec.with_tasks(5);
        assert!(reset(&too_many, 0).is_err());
    }

    #[test]
    fn populations() {
        let s = reset(&DomainSpec::benchmark(Domain::Firefighting, Variant::V1), 1).unwrap();
        assert_eq!(s.agents.len(), 10);
        assert!(s.agents.iter().all(|a| a.kind == AgentKind::Firetruck));
        let s = reset(&DomainSpec::benchmark(Domain::SearchRescue, Variant::V1), 1).unwrap();
        let amb = s.agents.iter().filter(|a| a.kind == AgentKind::Ambulance).count();
        let trucks = s.agents.iter().filter(|a| a.kind == AgentKind::Firetruck).count();
        assert_eq!((amb, trucks), (5, 5));
    }

    #[test]
    fn moves_clamp_at_boundary() {
        let spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V1).with_agents(1).with_tasks(1);
        let s = single_agent_state(&spec, Pos { x: 0, y: 0 }, Pos { x: 3, y: 3 });
        let mut rng = StepRng::new(0, 0);
        let next = step(&spec, &s, &[0], &mut rng).unwrap();
        assert_eq!(next.state.agents[0].pos, Pos { x: 0, y: 0 });
        let next = step(&spec, &s, &[2], &mut rng).unwrap();
        assert_eq!(next.state.agents[0].pos, Pos { x: 0, y: 0 });
        let next = step(&spec, &s, &[1], &mut rng).unwrap();
        assert_eq!(next.state.agents[0].pos, Pos { x: 1, y: 0 });
        let next = step(&spec, &s, &[3], &mut rng).unwrap();
        assert_eq!(next.state.agents[0].pos, Pos { x: 0, y: 1 });
    }

    #[test]
    fn box_v2_needs_two_agents() {
        let spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V2).with_agents(2).with_tasks(1);
        let mut s = reset(&spec, 3).unwrap();
        let at = s.tasks[0].pos;
        s.agents[0].pos = at;
        s.agents[1].pos = at;
        let mut rng = StepRng::new(0, 0);
        let one = step(&spec, &s, &[4, 5], &mut rng).unwrap();
        assert!(!one.state.tasks[0].done);
        assert_eq!(one.rewards, vec![0.0, 0.0]);
        let two = step(&spec, &s, &[4, 4], &mut rng).unwrap();
        assert!(two.state.tasks[0].done);
        assert_eq!(two.rewards, vec![5.0, 5.0]);
        assert!(two.done);
    }

    #[test]
    fn fire_v1_two_agents_with_forced_success() {
        let spec = DomainSpec::benchmark(Domain::Firefighting, Variant::V1).with_agents(2).with_tasks(1);
        let mut s = reset(&spec, 3).unwrap();
        let at = s.tasks[0].pos;
        s.agents.iter_mut().for_each(|a| a.pos = at);
        // StepRng(0, 0) yields u = 0.0 < 0.9.
        let out = step(&spec, &s, &[4, 4], &mut StepRng::new(0, 0)).unwrap();
        assert!(out.state.tasks[0].done);
        // u just below 1 fails.
        let out = step(&spec, &s, &[4, 4], &mut StepRng::new(u64::MAX, 0)).unwrap();
        assert!(!out.state.tasks[0].done);
    }

    #[test]
    fn act_away_from_tasks_is_noop() {
        let spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V1).with_agents(1).with_tasks(1);
        let s = single_agent_state(&spec, Pos { x: 0, y: 0 }, Pos { x: 2, y: 2 });
        let out = step(&spec, &s, &[4], &mut StepRng::new(0, 0)).unwrap();
        assert_eq!(out.rewards, vec![0.0]);
        assert_eq!(out.state.tasks, s.tasks);
        assert_eq!(out.state.agents, s.agents);
    }

    #[test]
    fn horizon_terminates_and_terminal_rejects() {
        let mut spec = DomainSpec::benchmark(Domain::BoxPushing, Variant::V2).with_agents(1).with_tasks(1);
        spec.horizon = 3;
        let mut s = reset(&spec, 0).unwrap();
        let mut rng = StepRng::new(0, 0);
        let mut steps = 0;
        loop {
            let out = step(&spec, &s, &[5], &mut rng).unwrap();
            steps += 1;
            s = out.state;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 3);
        assert!(matches!(step(&spec, &s, &[5], &mut rng), Err(Error::Terminal)));
    }

    #[test]
    fn escalation_changes_level_only() {
        let spec = DomainSpec::benchmark(Domain::Firefighting, Variant::V2);
        let s = reset(&spec, 2).unwrap();
        let out = step(&spec, &s, &vec![5; 10], &mut StepRng::new(0, 0)).unwrap();
        assert_eq!(out.state.tasks_remaining(), s.tasks_remaining());
        assert!(out.state.tasks.iter().all(|t| t.level == Level::High));
    }

    #[test]
    fn observation_layout() {
        let spec = DomainSpec::benchmark(Domain::SearchRescue, Variant::V1);
        let s = reset(&spec, 4).unwrap();
        let o0 = encode_observation(&s, 0).unwrap();
        assert_eq!(o0.len(), observation_len(&spec));
        assert_eq!(o0.len(), 10 * 16 + 2 + 10);
        let o3 = encode_observation(&s, 3).unwrap();
        let shared = PLANES * 16;
        assert_eq!(o0[..shared], o3[..shared]);
        assert_eq!(o0[shared + 2 + 0], 1.0);
        assert_eq!(o3[shared + 2 + 3], 1.0);
        assert!(encode_observation(&s, 10).is_err());

        let mut moved = s.clone();
        moved.agents[2].pos = Pos {
            x: (s.agents[2].pos.x + 1) % 4,
            y: s.agents[2].pos.y,
        };
        assert_ne!(encode_observation(&moved, 0).unwrap(), o0);
    }

    #[test]
    fn welfare_sums() {
        assert_eq!(social_welfare(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(social_welfare(&[0.0, 0.0]), 0.0);
        assert_eq!(social_welfare(&[5.0]), 5.0);
    }

    #[test]
    fn trajectory_line_format() {
        assert_eq!(trajectory_line(3, &[0, 4, 5], &[0.0, 10.0, 0.0], 1), "3\tLAS\t0,10,0\t1");
    }
}
