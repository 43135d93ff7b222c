"""Atomic array primitives for numba kernels.

Numba has no CPU atomics, so these lower straight to LLVM ``cmpxchg`` /
``atomicrmw`` instructions. All operate on one element ``arr[idx]`` of a
C-contiguous 1-d array and are sequentially consistent.
"""
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic

__all__ = ["atomic_cas", "atomic_add", "atomic_load"]


def _element_ptr(context, builder, arr_t, arr, idx_t, idx):
    ary = context.make_array(arr_t)(context, builder, arr)
    idx = context.cast(builder, idx, idx_t, types.intp)
    return cgutils.get_item_pointer(context, builder, arr_t, ary, [idx])


@intrinsic
def atomic_cas(typingctx, arr, idx, expected, desired):
    """Compare-and-swap ``arr[idx]``; returns the value seen before the swap."""
    if not isinstance(arr, types.Array) or not isinstance(arr.dtype, types.Integer):
        return None

    def codegen(context, builder, sig, args):
        arr_t, idx_t, exp_t, des_t = sig.args
        ptr = _element_ptr(context, builder, arr_t, args[0], idx_t, args[1])
        exp = context.cast(builder, args[2], exp_t, arr_t.dtype)
        des = context.cast(builder, args[3], des_t, arr_t.dtype)
        res = builder.cmpxchg(ptr, exp, des, "seq_cst", "seq_cst")
        return builder.extract_value(res, 0)

    return arr.dtype(arr, idx, expected, desired), codegen


@intrinsic
def atomic_add(typingctx, arr, idx, val):
    """``arr[idx] += val`` atomically (integer or float); returns the old value."""
    if not isinstance(arr, types.Array) or not isinstance(arr.dtype, (types.Integer, types.Float)):
        return None

    def codegen(context, builder, sig, args):
        arr_t, idx_t, val_t = sig.args
        ptr = _element_ptr(context, builder, arr_t, args[0], idx_t, args[1])
        v = context.cast(builder, args[2], val_t, arr_t.dtype)
        op = "fadd" if isinstance(arr_t.dtype, types.Float) else "add"
        return builder.atomic_rmw(op, ptr, v, "seq_cst")

    return arr.dtype(arr, idx, val), codegen


@intrinsic
def atomic_load(typingctx, arr, idx):
    """Relaxed atomic read of ``arr[idx]``."""
    if not isinstance(arr, types.Array):
        return None

    def codegen(context, builder, sig, args):
        arr_t, idx_t = sig.args
        ptr = _element_ptr(context, builder, arr_t, args[0], idx_t, args[1])
        align = context.get_abi_sizeof(context.get_value_type(arr_t.dtype))
        return builder.load_atomic(ptr, "monotonic", align)

    return arr.dtype(arr, idx), codegen
