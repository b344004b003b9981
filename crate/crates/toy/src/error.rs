use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("channel count {channels} is not divisible by {divisor}")]
    ChannelDivisibility { channels: usize, divisor: usize },
    #[error("point cloud has {points} points, fewer than the downsampling factor {factor}")]
    CloudTooSmall { points: usize, factor: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty prompt set")]
    EmptyPrompts,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = ToyError> = std::result::Result<T, E>;
