from tools.gen_build_info_file import gen_build_info_file

gen_build_info_file()
