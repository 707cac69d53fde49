pub mod baselines;
pub mod error;
pub mod gbd_master;
pub mod gbd_primal;
pub mod harness;
pub mod jo_cdsd;
pub mod lyapunov;
pub mod numerics;
pub mod radio;
pub mod seeding;
pub mod workload;
