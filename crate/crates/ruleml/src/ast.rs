//! Document tree.

use std::fmt;

macro_rules! kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Element kinds. Capitalized names are type elements, lowercase ones role edges.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Kind {
            $($variant),*
        }

        impl Kind {
            pub const ALL: &'static [Kind] = &[$(Kind::$variant),*];

            /// The element name used in documents.
            pub fn name(self) -> &'static str {
                match self {
                    $(Kind::$variant => $name),*
                }
            }

            pub fn from_name(name: &str) -> Option<Kind> {
                match name {
                    $($name => Some(Kind::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

kinds! {
    RuleBase => "RuleBase",
    Eca => "ECA",
    Time => "time",
    Event => "event",
    Condition => "condition",
    Action => "action",
    Postcondition => "postcondition",
    Else => "else",
    Assert => "Assert",
    Retract => "Retract",
    Content => "content",
    Naf => "Naf",
    Neg => "Neg",
    Weak => "weak",
    Strong => "strong",
    Implies => "Implies",
    Head => "head",
    Body => "body",
    And => "And",
    Atom => "Atom",
    Rel => "Rel",
    Equal => "Equal",
    Cterm => "Cterm",
    Op => "op",
    Ctor => "Ctor",
    Attachment => "Attachment",
    Arg => "arg",
    Slot => "slot",
    Oid => "oid",
    Happens => "Happens",
    Planned => "Planned",
    Occurs => "Occurs",
    Initially => "Initially",
    Initiates => "Initiates",
    Terminates => "Terminates",
    HoldsAt => "HoldsAt",
    ValueAt => "ValueAt",
    HoldsInterval => "HoldsInterval",
    Fluent => "fluent",
    Parameter => "parameter",
    IntervalRole => "interval",
    Interval => "Interval",
    Sequence => "Sequence",
    Or => "Or",
    Xor => "Xor",
    Conjunction => "Conjunction",
    Concurrent => "Concurrent",
    Not => "Not",
    Any => "Any",
    Aperiodic => "Aperiodic",
    Periodic => "Periodic",
    Ind => "Ind",
    Data => "Data",
    Var => "Var",
    Plex => "Plex",
    Skolem => "Skolem",
}

impl Kind {
    /// Kinds carrying text instead of children.
    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            Kind::Ind | Kind::Data | Kind::Var | Kind::Skolem | Kind::Ctor | Kind::Rel
        )
    }

    pub fn is_operator(self) -> bool {
        matches!(
            self,
            Kind::Sequence
                | Kind::Or
                | Kind::Xor
                | Kind::Conjunction
                | Kind::Concurrent
                | Kind::Not
                | Kind::Any
                | Kind::Aperiodic
                | Kind::Periodic
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RulemlNode {
    pub kind: Kind,
    pub attrs: Vec<(String, String)>,
    /// Text of leaf kinds; empty for everything else.
    pub text: String,
    pub children: Vec<RulemlNode>,
}

impl RulemlNode {
    pub fn new(kind: Kind, children: Vec<RulemlNode>) -> RulemlNode {
        RulemlNode {
            kind,
            attrs: Vec::new(),
            text: String::new(),
            children,
        }
    }

    pub fn leaf(kind: Kind, text: &str) -> RulemlNode {
        RulemlNode {
            kind,
            attrs: Vec::new(),
            text: text.to_string(),
            children: Vec::new(),
        }
    }

    pub fn with_attr(mut self, name: &str, value: &str) -> RulemlNode {
        self.attrs.push((name.to_string(), value.to_string()));
        self
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn child(&self, kind: Kind) -> Option<&RulemlNode> {
        self.children.iter().find(|c| c.kind == kind)
    }

    /// Children other than an `oid` edge.
    pub fn body(&self) -> impl Iterator<Item = &RulemlNode> {
        self.children.iter().filter(|c| c.kind != Kind::Oid)
    }

    /// Visits the node and all descendants in document order.
    pub fn walk(&self, f: &mut impl FnMut(&RulemlNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}
