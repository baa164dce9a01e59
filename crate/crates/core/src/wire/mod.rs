//! Byte-exact frame format for compressed payloads, the bit packer the
//! codecs store their masks with, and the mask-versus-key-value storage
//! cost model.

mod bitpack;
mod frame;
mod storage;

pub use bitpack::{packed_len, PackedFields, MAX_FIELD_WIDTH};
pub use frame::{
    deserialize, frame_len, header_len, serialize, WireError, FLAG_KEY_VALUE, FLAG_SIGN_BIT, MAGIC,
};
pub use storage::{crossover_sparsity, prefer_key_value, storage_cost, StorageCost, StorageScheme, KEY_BITS};
