from .gradcheck import check_gradients, numeric_gradient, relative_error
from .report import (
    EVAL_HEADER,
    EvalReport,
    EvalRow,
    ReportError,
    print_errors,
    print_eval_report,
    psnr,
    read_csv,
    read_eval_csv,
    write_csv,
    write_eval_csv,
)

__all__ = [
    'EVAL_HEADER',
    'EvalReport',
    'EvalRow',
    'ReportError',
    'check_gradients',
    'numeric_gradient',
    'print_errors',
    'print_eval_report',
    'psnr',
    'read_csv',
    'read_eval_csv',
    'relative_error',
    'write_csv',
    'write_eval_csv',
]
