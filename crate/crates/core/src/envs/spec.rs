use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    BoxPushing,
    Firefighting,
    SearchRescue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    V1,
    V2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Generic,
    Firetruck,
    Ambulance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Box,
    Fire,
    Victim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Low,
    High,
}

impl Domain {
    pub fn task_kind(self) -> TaskKind {
        match self {
            Domain::BoxPushing => TaskKind::Box,
            Domain::Firefighting => TaskKind::Fire,
            Domain::SearchRescue => TaskKind::Victim,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::BoxPushing => "box-pushing",
            Domain::Firefighting => "firefighting",
            Domain::SearchRescue => "search-rescue",
        })
    }
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "box-pushing" | "box" => Ok(Domain::BoxPushing),
            "firefighting" | "fire" => Ok(Domain::Firefighting),
            "search-rescue" | "sar" => Ok(Domain::SearchRescue),
            _ => Err(format!("unknown domain {s:?} (box-pushing, firefighting, search-rescue)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            _ => Err(format!("unknown variant {s:?} (v1, v2)")),
        }
    }
}

/// Acting agents at one task, by type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActingCounts {
    pub generic: usize,
    pub firetrucks: usize,
    pub ambulances: usize,
}

impl ActingCounts {
    pub fn total(&self) -> usize {
        self.generic + self.firetrucks + self.ambulances
    }

    pub(crate) fn add(&mut self, kind: AgentKind) {
        match kind {
            AgentKind::Generic => self.generic += 1,
            AgentKind::Firetruck => self.firetrucks += 1,
            AgentKind::Ambulance => self.ambulances += 1,
        }
    }
}

/// One benchmark scenario: domain, variant, grid and population.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub domain: Domain,
    pub variant: Variant,
    pub width: usize,
    pub height: usize,
    pub generic_agents: usize,
    pub firetrucks: usize,
    pub ambulances: usize,
    pub tasks: usize,
    pub horizon: usize,
    /// Per-step probability that an unfinished low-level task becomes high (v2 fire and rescue).
    pub escalation: f64,
    /// Reward for completing a task, split equally among the acting agents.
    pub reward: f64,
}

pub const ESCALATION_PROBABILITY: f64 = 0.2;
pub const TASK_REWARD: f64 = 10.0;

/// 50 steps up to 4x4, 80 beyond.
pub fn default_horizon(width: usize, height: usize) -> usize {
    if width * height <= 16 {
        50
    } else {
        80
    }
}

impl DomainSpec {
    /// The 4x4 benchmark instances: 4 boxes and 5 agents; 10 fire trucks and
    /// 3 fires; 5 ambulances, 5 fire trucks and 3 rescue sites.
    pub fn benchmark(domain: Domain, variant: Variant) -> Self {
        let (generic_agents, firetrucks, ambulances, tasks) = match domain {
            Domain::BoxPushing => (5, 0, 0, 4),
            Domain::Firefighting => (0, 10, 0, 3),
            Domain::SearchRescue => (0, 5, 5, 3),
        };
        Self {
            domain,
            variant,
            width: 4,
            height: 4,
            generic_agents,
            firetrucks,
            ambulances,
            tasks,
            horizon: default_horizon(4, 4),
            escalation: ESCALATION_PROBABILITY,
            reward: TASK_REWARD,
        }
    }

    /// Resize the grid and reset the horizon to its default for that size.
    pub fn with_grid(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self.horizon = default_horizon(width, height);
        self
    }

    pub fn with_tasks(mut self, tasks: usize) -> Self {
        self.tasks = tasks;
        self
    }

    /// Set the population of the domain's agent types. For search and rescue
    /// `count` is split into equal numbers of fire trucks and ambulances.
    pub fn with_agents(mut self, count: usize) -> Self {
        match self.domain {
            Domain::BoxPushing => self.generic_agents = count,
            Domain::Firefighting => self.firetrucks = count,
            Domain::SearchRescue => {
                self.firetrucks = count / 2;
                self.ambulances = count - count / 2;
            }
        }
        self
    }

    pub fn num_agents(&self) -> usize {
        self.generic_agents + self.firetrucks + self.ambulances
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Agent types in id order.
    pub fn agent_kinds(&self) -> Vec<AgentKind> {
        std::iter::repeat(AgentKind::Generic)
            .take(self.generic_agents)
            .chain(std::iter::repeat(AgentKind::Firetruck).take(self.firetrucks))
            .chain(std::iter::repeat(AgentKind::Ambulance).take(self.ambulances))
            .collect()
    }

    pub fn has_escalation(&self) -> bool {
        self.variant == Variant::V2 && matches!(self.domain, Domain::Firefighting | Domain::SearchRescue)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(field, msg));
        if self.width == 0 || self.height == 0 {
            return bad("grid", format!("grid must be at least 1x1, got {}x{}", self.width, self.height));
        }
        if self.tasks == 0 {
            return bad("tasks", "at least one task is required".into());
        }
        if self.tasks > self.cells() {
            return bad(
                "tasks",
                format!("{} tasks do not fit on {} cells", self.tasks, self.cells()),
            );
        }
        if self.horizon == 0 {
            return bad("horizon", "horizon must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.escalation) {
            return bad("escalation", format!("must be in [0, 1], got {}", self.escalation));
        }
        if !self.reward.is_finite() {
            return bad("reward", "must be finite".into());
        }
        let ok = match self.domain {
            Domain::BoxPushing => self.generic_agents > 0 && self.firetrucks == 0 && self.ambulances == 0,
            Domain::Firefighting => self.firetrucks > 0 && self.generic_agents == 0 && self.ambulances == 0,
            Domain::SearchRescue => self.firetrucks > 0 && self.ambulances > 0 && self.generic_agents == 0,
        };
        if !ok {
            return bad(
                "agents",
                format!(
                    "{} needs {}; got generic={} firetrucks={} ambulances={}",
                    self.domain,
                    match self.domain {
                        Domain::BoxPushing => "generic agents only",
                        Domain::Firefighting => "fire trucks only",
                        Domain::SearchRescue => "both fire trucks and ambulances",
                    },
                    self.generic_agents,
                    self.firetrucks,
                    self.ambulances
                ),
            );
        }
        Ok(())
    }

    /// Probability that a task of the given level is completed this step by
    /// the given acting agents.
    pub fn completion_probability(&self, level: Level, acting: ActingCounts) -> f64 {
        let n = acting.total();
        match (self.domain, self.variant, level) {
            (Domain::BoxPushing, Variant::V1, _) => (n >= 1) as u8 as f64,
            (Domain::BoxPushing, Variant::V2, _) => (n >= 2) as u8 as f64,
            (Domain::Firefighting, _, Level::Low) => match n {
                0 | 1 => 0.0,
                2 => 0.9,
                _ => 1.0,
            },
            (Domain::Firefighting, _, Level::High) => match n {
                0 | 1 => 0.0,
                2 => 0.75,
                3 => 0.9,
                _ => 1.0,
            },
            (Domain::SearchRescue, _, Level::Low) => {
                (acting.firetrucks >= 1 && acting.ambulances >= 1) as u8 as f64
            }
            (Domain::SearchRescue, _, Level::High) => {
                (acting.firetrucks >= 2 && acting.ambulances >= 2) as u8 as f64
            }
        }
    }
}
