//! Source types and their ranked title scales.
//!
//! A title scale orders the possible legal connections between a source and
//! the units around it, from the outsourcer-side unit's strongest hold (rank 1)
//! down to the insourcer-side unit's strongest hold (rank `n`). The first
//! `positive_count` levels are positive for the outsourcer side; the remainder
//! are positive for the insourcer side. Ranks seen from the insourcer side are
//! the mirror `n + 1 - level`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// The eleven built-in kinds of sources plus user-registered kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum SourceType {
    RealEstate,
    Vehicles,
    WorksOfArt,
    ToolsAndEquipment,
    ControlCodes,
    InformationBases,
    Persons,
    Ipr,
    Knowledge,
    ContractsAndGoodwill,
    Finance,
    /// A kind registered with its own scale; the name is the scale id.
    Custom(String),
}

impl SourceType {
    pub const BUILTIN: [SourceType; 11] = [
        SourceType::RealEstate,
        SourceType::Vehicles,
        SourceType::WorksOfArt,
        SourceType::ToolsAndEquipment,
        SourceType::ControlCodes,
        SourceType::InformationBases,
        SourceType::Persons,
        SourceType::Ipr,
        SourceType::Knowledge,
        SourceType::ContractsAndGoodwill,
        SourceType::Finance,
    ];

    /// Keyword used in documents and JSON.
    pub fn keyword(&self) -> &str {
        match self {
            SourceType::RealEstate => "real-estate",
            SourceType::Vehicles => "vehicles",
            SourceType::WorksOfArt => "works-of-art",
            SourceType::ToolsAndEquipment => "tools",
            SourceType::ControlCodes => "control-codes",
            SourceType::InformationBases => "information-bases",
            SourceType::Persons => "persons",
            SourceType::Ipr => "ipr",
            SourceType::Knowledge => "knowledge",
            SourceType::ContractsAndGoodwill => "contracts-goodwill",
            SourceType::Finance => "finance",
            SourceType::Custom(name) => name,
        }
    }

    pub fn builtin_from_keyword(word: &str) -> Option<SourceType> {
        SourceType::BUILTIN
            .into_iter()
            .find(|t| t.keyword() == word)
    }

    pub fn is_financial(&self) -> bool {
        matches!(self, SourceType::Finance)
    }

    /// Id of the scale this type is ranked on.
    pub fn scale_id(&self) -> &str {
        match self {
            SourceType::Persons => PERSONNEL,
            SourceType::ToolsAndEquipment => TOOLS,
            SourceType::Ipr => IPR,
            SourceType::Custom(name) => name,
            _ => GENERIC,
        }
    }
}

impl From<String> for SourceType {
    fn from(s: String) -> Self {
        SourceType::builtin_from_keyword(&s).unwrap_or(SourceType::Custom(s))
    }
}

impl From<SourceType> for String {
    fn from(t: SourceType) -> Self {
        t.keyword().to_owned()
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

pub const PERSONNEL: &str = "personnel";
pub const TOOLS: &str = "tools";
pub const IPR: &str = "ipr";
pub const GENERIC: &str = "generic";

/// How the holder at a level pays for the source; drives cost routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tenure {
    Owned,
    Leased,
    Employed,
    Contracted,
}

/// Role slots a level template can mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Outsourcer,
    Insourcer,
    ThirdParty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTemplate {
    pub index: u32,
    /// Text with `{S}` (source), `{A}`/`{B}` (outsourcer side), `{X}`/`{Y}`
    /// (insourcer side) and `{C}` (third-party contractor) placeholders.
    pub text: String,
    pub tenure: Tenure,
}

impl LevelTemplate {
    pub fn mentions(&self, role: Role) -> bool {
        match role {
            // The outsourcer slot is the reference perspective of every title.
            Role::Outsourcer => true,
            Role::Insourcer => self.text.contains("{X}"),
            Role::ThirdParty => self.text.contains("{C}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleScale {
    pub id: String,
    pub levels: Vec<LevelTemplate>,
    pub positive_count: u32,
}

impl TitleScale {
    fn from_texts(id: &str, texts: &[(&str, Tenure)]) -> Self {
        let levels = texts
            .iter()
            .enumerate()
            .map(|(i, (text, tenure))| LevelTemplate {
                index: i as u32 + 1,
                text: (*text).to_owned(),
                tenure: *tenure,
            })
            .collect::<Vec<_>>();
        let positive_count = levels.len() as u32 / 2;
        Self {
            id: id.to_owned(),
            levels,
            positive_count,
        }
    }

    /// A user-registered scale with `levels` levels, the first `positive_count`
    /// positive for the outsourcer side.
    pub fn custom(id: impl Into<String>, levels: u32, positive_count: u32) -> Self {
        let id = id.into();
        let levels = (1..=levels)
            .map(|i| {
                let holder = if i <= positive_count { "{A}" } else { "{X}" };
                let user = if i <= positive_count { "{B}" } else { "{Y}" };
                LevelTemplate {
                    index: i,
                    text: format!("{{S}} is held by {holder} at level {i} of {id}, used in {user}"),
                    tenure: if i == 1 || i == levels {
                        Tenure::Owned
                    } else {
                        Tenure::Leased
                    },
                }
            })
            .collect();
        Self {
            id,
            levels,
            positive_count,
        }
    }

    pub fn len(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, level: u32) -> Option<&LevelTemplate> {
        level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i as usize))
    }

    pub fn contains_level(&self, level: u32) -> bool {
        (1..=self.len()).contains(&level)
    }

    /// Mirror of a level or rank: `n + 1 - r`.
    pub fn mirror(&self, rank: u32) -> u32 {
        self.len() + 1 - rank
    }

    pub fn polarity_of_rank(&self, rank: u32) -> Polarity {
        if rank <= self.positive_count {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    /// Structural check of a scale definition: `n >= 2`, `1 <= positive < n`,
    /// indices `1..=n` in order.
    pub fn check(&self) -> Result<(), String> {
        let n = self.len();
        if n < 2 {
            return Err(format!(
                "scale {} needs at least 2 levels, has {n}",
                self.id
            ));
        }
        if self.positive_count < 1 || self.positive_count >= n {
            return Err(format!(
                "scale {}: positive count {} outside 1..{}",
                self.id,
                self.positive_count,
                n - 1
            ));
        }
        if let Some(bad) = self
            .levels
            .iter()
            .enumerate()
            .find(|(i, l)| l.index != *i as u32 + 1)
        {
            return Err(format!(
                "scale {}: level at position {} has index {}",
                self.id,
                bad.0 + 1,
                bad.1.index
            ));
        }
        Ok(())
    }
}

/// Personnel titles, from permanent employment by the outsourcer down to
/// permanent employment by the insourcer.
pub fn personnel_scale() -> &'static TitleScale {
    static SCALE: OnceLock<TitleScale> = OnceLock::new();
    SCALE.get_or_init(|| {
        use Tenure::*;
        TitleScale::from_texts(
            PERSONNEL,
            &[
                ("{S} is a permanent employee of {A} in its subunit {B}", Employed),
                ("{S} is a temporary employee of {A} in its subunit {B}", Employed),
                ("{S} has been contracted by {A} from {C} for a project carried out by or for subunit {B}", Contracted),
                ("{S} has been contracted by {A} from {X} for a project carried out by or for subunit {B}", Contracted),
                ("{S} has been contracted by {X} from {A} for a project carried out by or for subunit {Y}", Contracted),
                ("{S} has been contracted by {X} from {C} for a project carried out by or for subunit {Y}", Contracted),
                ("{S} is a temporary employee of {X} in its subunit {Y}", Employed),
                ("{S} is a permanent employee of {X} in its subunit {Y}", Employed),
            ],
        )
    })
}

pub fn tools_scale() -> &'static TitleScale {
    static SCALE: OnceLock<TitleScale> = OnceLock::new();
    SCALE.get_or_init(|| {
        use Tenure::*;
        TitleScale::from_texts(
            TOOLS,
            &[
                ("{S} is owned by {A} and used by personnel of {A} for work in its subunit {B}", Owned),
                ("{S} is leased or rented by {A} from {C} and used by personnel of {A} for work in its subunit {B}", Leased),
                ("{S} is leased or rented by {A} from {X} and used by personnel of {A} for work in its subunit {B}", Leased),
                ("{S} is leased or rented by {X} from {A} and used by personnel of {X} for work in its subunit {Y}", Leased),
                ("{S} is leased or rented by {X} from {C} and used by personnel of {X} for work in its subunit {Y}", Leased),
                ("{S} is owned by {X} and used by personnel of {X} for work in its subunit {Y}", Owned),
            ],
        )
    })
}

pub fn ipr_scale() -> &'static TitleScale {
    static SCALE: OnceLock<TitleScale> = OnceLock::new();
    SCALE.get_or_init(|| {
        use Tenure::*;
        TitleScale::from_texts(
            IPR,
            &[
                ("{S} is owned (including copyrights) by {A} and used by personnel of {A} for work in its subunit {B}", Owned),
                ("{S} is licensed by {A} from {C} and used by personnel of {A} for work in its subunit {B}", Leased),
                ("{S} is licensed by {A} from {X} and used by personnel of {A} for work in its subunit {B}", Leased),
                ("{S} is licensed by {X} from {A} and used by personnel of {X} for work in its subunit {Y}", Leased),
                ("{S} is licensed by {X} from {C} and used by personnel of {X} for work in its subunit {Y}", Leased),
                ("{S} is owned (including copyrights) by {X} and used by personnel of {X} for work in its subunit {Y}", Owned),
            ],
        )
    })
}

/// Owned / leased-from-C / leased-from-X mirror scale shared by the types
/// that have no dedicated ranking.
pub fn generic_scale() -> &'static TitleScale {
    static SCALE: OnceLock<TitleScale> = OnceLock::new();
    SCALE.get_or_init(|| {
        use Tenure::*;
        TitleScale::from_texts(
            GENERIC,
            &[
                ("{S} is owned by {A} and used in its subunit {B}", Owned),
                (
                    "{S} is leased by {A} from {C} and used in its subunit {B}",
                    Leased,
                ),
                (
                    "{S} is leased by {A} from {X} and used in its subunit {B}",
                    Leased,
                ),
                (
                    "{S} is leased by {X} from {A} and used in its subunit {Y}",
                    Leased,
                ),
                (
                    "{S} is leased by {X} from {C} and used in its subunit {Y}",
                    Leased,
                ),
                ("{S} is owned by {X} and used in its subunit {Y}", Owned),
            ],
        )
    })
}

/// The four scales that ship with the engine.
pub fn builtin_scales() -> [&'static TitleScale; 4] {
    [
        personnel_scale(),
        tools_scale(),
        ipr_scale(),
        generic_scale(),
    ]
}

pub fn builtin_scale(id: &str) -> Option<&'static TitleScale> {
    builtin_scales().into_iter().find(|s| s.id == id)
}
