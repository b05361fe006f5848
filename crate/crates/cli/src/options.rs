//! Command-line mirrors of the library enums.

use clap::ValueEnum;
use hkconv::graphnet::{Split, Task};
use hkconv::invariants::Suite;
use hkconv::layers::{Activation, ConvMode, Pooling};
use hkconv::manifold::Transport;

macro_rules! value_enum {
    ($name:ident => $target:ty { $($variant:ident => $value:expr),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
        pub enum $name {
            $($variant),+
        }

        impl std::str::FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                <Self as ValueEnum>::from_str(s, false)
            }
        }

        impl From<$name> for $target {
            fn from(v: $name) -> $target {
                match v {
                    $($name::$variant => $value),+
                }
            }
        }
    };
}

value_enum!(TaskArg => Task { Graph => Task::Graph, Node => Task::Node });
value_enum!(PoolingArg => Pooling { Uniform => Pooling::Uniform, Attention => Pooling::Attention });
value_enum!(ModeArg => ConvMode { Relative => ConvMode::Relative, Direct => ConvMode::Direct });
value_enum!(ActivationArg => Activation {
    Identity => Activation::Identity,
    Relu => Activation::Relu,
    Tanh => Activation::Tanh,
});
value_enum!(SplitArg => Split { Train => Split::Train, Val => Split::Val, Test => Split::Test });
value_enum!(SuiteArg => Suite {
    All => Suite::All,
    Manifold => Suite::Manifold,
    Layers => Suite::Layers,
    Theorem1 => Suite::Theorem1,
    Prop1 => Suite::Prop1,
});
value_enum!(TransportArg => Transport {
    Isometric => Transport::Isometric,
    CorrectionOnly => Transport::CorrectionOnly,
});
