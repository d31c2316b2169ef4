pub mod ace;
pub mod ddpg;
pub mod envs;
pub mod harness;
pub mod numerics;
pub mod rollout;
