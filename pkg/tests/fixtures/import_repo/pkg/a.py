from . import b
from .b import helper_b
import json

thing = 1
