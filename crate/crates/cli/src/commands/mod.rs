pub mod evaluate;
pub mod gen_data;
pub mod score;
pub mod simulate;
pub mod train;
pub mod weights_train;

pub use evaluate::cmd_evaluate;
pub use gen_data::cmd_gen_data;
pub use score::cmd_score;
pub use simulate::cmd_simulate;
pub use train::cmd_train;
pub use weights_train::cmd_weights_train;
