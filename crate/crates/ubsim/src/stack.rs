//! Host stacks under comparison.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stack {
    /// CPU load/store over the memory bus, transport bypassed.
    UbLdst,
    /// Jetty work requests through the on-bus controller.
    UbUrma,
    /// RoCE with an inline (BlueFlame style) WQE write.
    RoceBf,
    /// RoCE with a DMA-fetched WQE.
    RoceDma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ub,
    Roce,
}

impl Stack {
    pub const ALL: [Stack; 4] = [Stack::UbLdst, Stack::UbUrma, Stack::RoceBf, Stack::RoceDma];

    pub fn family(self) -> Family {
        match self {
            Stack::UbLdst | Stack::UbUrma => Family::Ub,
            Stack::RoceBf | Stack::RoceDma => Family::Roce,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stack::UbLdst => "ub_ldst",
            Stack::UbUrma => "ub_urma",
            Stack::RoceBf => "roce_bf",
            Stack::RoceDma => "roce_dma",
        }
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stack {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stack::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown stack `{s}`"))
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Ub => "ub",
            Family::Roce => "roce",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
