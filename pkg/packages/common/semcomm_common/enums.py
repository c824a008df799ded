from enum import Enum


class Modality(str, Enum):
    IMAGE = "image"
    TEXT = "text"
    SPEECH = "speech"
    VIDEO = "video"


# Row order of the modal segment table.
MODALITY_ORDER = (Modality.IMAGE, Modality.TEXT, Modality.SPEECH, Modality.VIDEO)


class ChannelKind(str, Enum):
    AWGN = "AWGN"
    RAYLEIGH = "Rayleigh"


class HeadKind(str, Enum):
    CLASS_VEC = "class_vec"
    CLASS_SEQ = "class_seq"
    RECON_IMAGE = "recon_image"
    RECON_SEQ = "recon_seq"


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross_entropy"
    BINARY_CROSS_ENTROPY = "binary_cross_entropy"
    CTC = "ctc"
    MSE = "mse"


class MetricKind(str, Enum):
    ACCURACY = "accuracy"
    F1 = "f1"
    BLEU = "bleu"
    WORD_ACCURACY = "word_accuracy"
    PSNR = "psnr"


class DatasetKind(str, Enum):
    IMG_CLASS = "img_class"
    IMG_RECON = "img_recon"
    TEXT_CLASS = "text_class"
    TEXT_RECON = "text_recon"
    SPEECH_REC = "speech_rec"
    VIDEO_CLASS = "video_class"
    MM_XOR = "mm_xor"
    MM_MULTILABEL = "mm_multilabel"


class TransmissionMode(str, Enum):
    FUSED = "fused"
    CONCAT = "concat"
